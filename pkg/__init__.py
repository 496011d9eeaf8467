"""
Walsh-Hadamard Autoencoder Lab - channel autoencoders trained with Walsh-domain
converters, compared against finite-blocklength bounds and a Polar/SCL baseline
"""
