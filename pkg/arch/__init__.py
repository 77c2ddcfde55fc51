"""arch - Node architecture templates and angle encoders."""
