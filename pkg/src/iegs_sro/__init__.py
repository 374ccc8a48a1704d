"""Sample robust scheduling of coupled electricity and gas networks."""
