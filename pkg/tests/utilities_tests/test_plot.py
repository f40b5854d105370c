"""Test attention overlay plots."""
import matplotlib.pyplot as plt
import numpy as np

from pairedit.attention.attention import AttentionRecord
from pairedit.numerics.tensor import Tensor
from pairedit.utilities.plot import plot_attention_overlay


def test_attention_overlay(random_image):
    """The overlay has a target and a source panel titled by the attention site."""
    weights = np.full((16, 16), 1 / 16)
    weights[5, 10] = 0.5
    record = AttentionRecord("down0", Tensor(weights), 4, 4)
    fig, ax = plot_attention_overlay(random_image(), random_image(), record, 5)
    assert len(ax) == 2
    assert ax[1].get_title() == "source, down0"
    plt.close(fig)
