"""attrfool: estimate the robustness of text-classifier explanations under synonym attacks."""

__version__ = "0.1.0"
