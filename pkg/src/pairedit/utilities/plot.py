"""Plotting methods."""
import matplotlib.pyplot as plt
import numpy as np

from pairedit.attention.attention import AttentionRecord
from pairedit.evalkit.heatmap import attention_row


def _token_center(token: int, width_tokens: int, stride_y: float, stride_x: float) -> tuple[float, float]:
    row, col = divmod(token, width_tokens)
    return (col + 0.5) * stride_x - 0.5, (row + 0.5) * stride_y - 0.5


def plot_attention_overlay(source: np.ndarray, target: np.ndarray, record: AttentionRecord, query_token: int):
    """Return a two-panel figure: the query token on the target and its attention over the source.

    The source panel overlays the attention row and marks its argmax token as matching point.
    """
    height, width = target.shape[1:]
    stride_y, stride_x = height / record.height_tokens, width / record.width_tokens
    row = attention_row(record, query_token)

    fig, ax = plt.subplots(1, 2, figsize=(8, 4))
    ax[0].imshow(np.clip(target.transpose(1, 2, 0), 0, 1))
    qx, qy = _token_center(query_token, record.width_tokens, stride_y, stride_x)
    ax[0].scatter([qx], [qy], s=60, c="red", marker="x")
    ax[0].set_title("target, query token")

    ax[1].imshow(np.clip(source.transpose(1, 2, 0), 0, 1))
    ax[1].imshow(row, cmap="inferno", alpha=0.6, extent=(-0.5, width - 0.5, height - 0.5, -0.5),
                 interpolation="nearest")
    mx, my = _token_center(int(np.argmax(row)), record.width_tokens, stride_y, stride_x)
    ax[1].scatter([mx], [my], s=60, marker="o", edgecolors="cyan", facecolors="none")
    ax[1].set_title(f"source, {record.layer_id}")

    for a in ax:
        a.axis("off")
    fig.tight_layout(pad=0.05)
    return fig, ax
