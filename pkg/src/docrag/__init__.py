"""Parse .docx documents into typed elements, chunk them by title, embed and index them for retrieval."""

__version__ = "0.1.0"
