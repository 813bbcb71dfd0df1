"""Command-line tools for the marginal-gp benchmark."""
