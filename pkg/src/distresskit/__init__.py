"""Corporate-distress text analytics: MD&A sentiment and bankruptcy classifiers."""

__version__ = "0.1.0"
