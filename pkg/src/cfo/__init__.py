"""Control-flow obfuscation engine for the MiniLang toy language."""

__version__ = "0.1.0"
