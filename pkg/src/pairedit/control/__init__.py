"""Editing signal injection."""
from pairedit.control.drag import drag_token_inject
from pairedit.control.encoder import ControlEncoder, ControlFeatures, inject_target_only

__all__ = ["ControlEncoder", "ControlFeatures", "drag_token_inject", "inject_target_only"]
