"""fundlens: visual and textual feature extraction for crowdfunding listings,
with four predictive models over nested variable sets and interpretation tools."""

__version__ = "0.1.0"
