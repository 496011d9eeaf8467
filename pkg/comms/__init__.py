"""
Signal-processing, learning and power-model modules for the Walsh-Hadamard
autoencoder lab
"""
