# CHSH device-independent randomness expansion rates package
