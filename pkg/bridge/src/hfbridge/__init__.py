"""hfbridge: serve a transformer classifier and its explanations over the attrfool/1 protocol."""

__version__ = "0.1.0"
