"""File management utilities for run artifacts."""

from pathlib import Path

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined
from loguru import logger

from ..config import TEMPLATES_PATH
from ..errors import EmitError


class ArtifactManager:
    """Writes run artifacts into one directory and reads cached holdouts back."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        # plain-text artifacts, nothing to escape
        self.template_env = Environment(loader=FileSystemLoader(TEMPLATES_PATH), undefined=StrictUndefined, keep_trailing_newline=True)

    def ensure_dir(self) -> Path:
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise EmitError(self.root, str(e)) from e
        return self.root

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """Write a frame without its index; floats keep full precision."""
        path = self.ensure_dir() / name
        try:
            frame.to_csv(path, index=False)
        except OSError as e:
            raise EmitError(path, str(e)) from e
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return path

    def write_text(self, name: str, content: str) -> Path:
        path = self.ensure_dir() / name
        try:
            path.write_text(content)
        except OSError as e:
            raise EmitError(path, str(e)) from e
        logger.debug(f"Wrote {path}")
        return path

    def render_text(self, template_name: str, **context) -> str:
        template = self.template_env.get_template(template_name)
        return template.render(**context)

    def render(self, template_name: str, target_name: str, **context) -> Path:
        """Render a template from the package templates into the output directory."""
        return self.write_text(target_name, self.render_text(template_name, **context))

    def holdout_path(self, key: str) -> Path:
        return self.root / f"{key}.npz"

    def load_holdout(self, key: str) -> tuple[np.ndarray, np.ndarray] | None:
        path = self.holdout_path(key)
        if not path.exists():
            return None
        try:
            with np.load(path) as data:
                logger.debug(f"Loaded cached holdout {path}")
                return data["features"], data["labels"]
        except (OSError, ValueError, KeyError) as e:
            logger.warning(f"Ignoring unreadable holdout cache {path}: {e}")
            return None

    def save_holdout(self, key: str, features: np.ndarray, labels: np.ndarray) -> Path:
        path = self.ensure_dir() / f"{key}.npz"
        try:
            np.savez(path, features=features, labels=labels)
        except OSError as e:
            raise EmitError(path, str(e)) from e
        return path
