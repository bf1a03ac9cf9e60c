"""Internal DLA on cylinder graphs V_N x Z and its Gaussian fluctuations."""

__version__ = "0.1.0"
