"""mixdistill: CoT/PoT reasoning-path distillation toolkit."""

__version__ = "0.1.0"
