"""Telnet intrusion capture and bot-loader family mining toolkit."""

__version__ = "0.1.0"
