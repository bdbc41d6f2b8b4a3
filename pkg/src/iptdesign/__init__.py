"""Design workbench for Class E / Class EF driven inductive power transfer."""

__version__ = "0.1.0"
