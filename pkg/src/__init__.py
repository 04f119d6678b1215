"""Opinion alignment toolkit: whose opinions do language models reflect."""

__version__ = "1.0.0"
__author__ = "Opinion Alignment Team"
