"""Energy-conserving spline particle-in-cell methods for the 1d2v Vlasov-Maxwell system."""

__version__ = "0.1.0"
