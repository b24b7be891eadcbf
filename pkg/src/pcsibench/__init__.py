"""Post-COVID symptom intensity (PCSI) cohort analytics and regression benchmarking."""

__version__ = "0.1.0"
