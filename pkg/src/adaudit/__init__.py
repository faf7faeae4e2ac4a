"""Toolkit for auditing news-website monetization from offline crawl captures."""

__version__ = "0.1.0"
