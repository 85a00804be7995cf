"""studentkit: program runner and reference trainer for CoT/PoT distillation data."""

__version__ = "0.1.0"
