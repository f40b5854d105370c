"""Noise schedule, training objectives, sampler and training loop."""
