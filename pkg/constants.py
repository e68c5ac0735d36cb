DATASET_MAGIC = b"STRD"
DATASET_VERSION = 1
CHECKPOINT_MAGIC = b"STRC"
CHECKPOINT_VERSION = 1

POSE_DIM = 4
IMAGE_CHANNELS = 3

ARENA_HALF_SIZE = 1.0
POSE_MARGIN = 0.1  # from the arena walls
DEPTH_SHADING = 0.1  # colour / (1 + DEPTH_SHADING * distance)
REJECTION_BUDGET = 1000

BACKGROUND = (0.15, 0.15, 0.15)
PALETTE = (
    (0.90, 0.10, 0.10),  # red
    (0.10, 0.75, 0.20),  # green
    (0.15, 0.30, 0.95),  # blue
    (0.95, 0.85, 0.10),  # yellow
    (0.80, 0.20, 0.85),  # magenta
    (0.10, 0.85, 0.85),  # cyan
    (0.95, 0.55, 0.10),  # orange
    (0.95, 0.95, 0.95),  # white
)
HIGHLIGHT = (1.0, 0.2, 0.6)

DISTORTION_LEVELS = {"original": 0.0, "low": 0.3, "high": 0.8}

STRIP_ROWS = 16
PIXEL_SCALE = 255.0
