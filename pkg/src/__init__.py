# Imaginary-time ground state solver package
