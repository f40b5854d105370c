"""Two-frame denoiser, latent stand-in and source embedder."""
