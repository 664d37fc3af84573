# src/modules/__init__.py
