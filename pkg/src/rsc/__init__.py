"""Secure-compilation workbench: five small languages, three compilers,
heap monitors, cross-language relations and trace backtranslation."""

__version__ = "0.1.0"
