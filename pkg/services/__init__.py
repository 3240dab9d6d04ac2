# Numerics services
