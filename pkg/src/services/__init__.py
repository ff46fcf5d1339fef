"""Services layer: sampling and acceptance orchestration."""
