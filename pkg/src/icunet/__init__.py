"""U-Net denoising autoencoder for multichannel signals, trained on a loss ensemble."""

__version__ = "0.1.0"
