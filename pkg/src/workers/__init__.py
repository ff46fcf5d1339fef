"""Background workers for independent Monte Carlo chains."""
