"""Inter-band relative power difference (inter-BRPD) EEG analysis."""

__version__ = "0.1.0"
