"""Two-way time transfer simulation library."""
