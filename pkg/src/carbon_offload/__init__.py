"""Carbon-aware ML task offloading under a long-term carbon-credit budget."""
