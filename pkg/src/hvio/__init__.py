"""Hybrid feature/direct visual-inertial odometry front-end.

Submodules:
    geometry  - SO(3)/SE(3), pinhole camera, epipolar estimation
    image     - grayscale images, pyramids, subpixel sampling, PGM I/O
    features  - FAST corners, BRIEF descriptors, Hamming matching
    flow      - pyramidal Lucas-Kanade optical flow
    imu       - IMU streams and dead-reckoning pose prediction
    direct    - IMU-seeded coarse-to-fine photometric alignment
    tracking  - the full front-end state machine
    metrics   - ATE / RPE / S.D. trajectory evaluation
    dataset   - EuRoC-layout loading and the synthetic sequence generator
    cli       - command-line entry point (synth / run / eval / bench)
"""

__version__ = "0.1.0"
