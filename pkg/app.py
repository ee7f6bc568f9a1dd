"""Flask application factory for the quantum disk toolkit."""

from __future__ import annotations

import logging
import sys

from flask import Flask

from config import Config
from services.database import init_db


def create_app(config_class: type[Config] = Config) -> Flask:
    """Create and configure the Flask application."""
    app = Flask(__name__)
    app.config.from_object(config_class)

    # Configure logging
    log_level = app.config.get("LOG_LEVEL", "INFO")
    log_format = app.config.get("LOG_FORMAT", "%(asctime)s [%(levelname)s] %(name)s: %(message)s")

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level, logging.INFO))
    if not any(getattr(h, "_qdisk", False) for h in root_logger.handlers):
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(log_format))
        handler._qdisk = True  # type: ignore[attr-defined]
        root_logger.addHandler(handler)

    logging.getLogger(__name__).info("Flask app logging configured at %s level", log_level)

    config_class.ensure_directories()
    init_db(app.config["DATABASE_URL"])

    from blueprints.api import api_bp

    app.register_blueprint(api_bp)
    return app


if __name__ == "__main__":
    create_app().run()
