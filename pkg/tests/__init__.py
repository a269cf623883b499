# Test package for AI Test Case Copilot
