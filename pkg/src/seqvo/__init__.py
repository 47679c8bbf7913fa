"""Sequential self-supervised visual odometry."""
