"""Deep ensemble wind-speed forecasting with CNN wings, a sparse-AE tail, an autoencoder body and an MLP nose."""

__version__ = "0.1.0"
