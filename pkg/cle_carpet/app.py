"""
CarpetLab - Flask Application
Application factory for the JSON run service
"""

from flask import Flask
from flask_cors import CORS

from .config import TOOL_VERSION, Config
from .routes import api


def create_app(verbose=True):
    """
    Application factory function
    Creates and configures the Flask application

    Args:
        verbose (bool): Print the startup configuration lines

    Returns:
        Flask: Configured Flask application instance
    """
    app = Flask(__name__)

    # Load configuration
    app.config.from_object(Config)

    # Enable CORS for the JSON API
    CORS(app, resources={
        r"/api/*": {
            "origins": "*",
            "methods": ["GET", "POST", "OPTIONS"],
            "allow_headers": ["Content-Type", "Authorization"]
        }
    })

    # Register blueprints
    app.register_blueprint(api)

    # Error handlers
    @app.errorhandler(404)
    def not_found(error):
        """Handle 404 errors"""
        return {"status": "error", "message": "Not found", "code": "NOT_FOUND"}, 404

    @app.errorhandler(500)
    def server_error(error):
        """Handle 500 errors"""
        print(f"❌ Server error: {error}")
        return {"status": "error", "message": "Internal server error", "code": "INTERNAL_ERROR"}, 500

    if verbose:
        print(f"Flask Environment: {Config.FLASK_ENV}")
        print(f"Debug Mode: {Config.DEBUG}")
        print(f"CarpetLab {TOOL_VERSION}, output directory: {Config.OUTPUT_DIR}")

    return app
