"""SSIM, matching accuracy, attention heatmaps and the ablation harness."""
