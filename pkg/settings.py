"""
settings.py - Central configuration for splitq.

Every constant and tunable parameter lives here so behaviour can change
without touching the logic. Values that a run may override come from
config.json (see cli/config.py); these are the defaults.
"""

import math

# ──────────────────────────────────────────────
# SIMULATOR
# ──────────────────────────────────────────────
MAX_QUBITS = 8                  # hard width limit for any circuit
DENSITY_MAX_QUBITS = 6          # density-matrix path (noisy execution)
DEFAULT_SHOTS = 8092            # shots per noisy job
EXACT = "exact"                 # shots value for exact expectations
NORM_TOL = 1e-9                 # state validity tolerance
PARAM_SHIFT = math.pi / 2       # shift for generators with eigenvalues ±1/2

# ──────────────────────────────────────────────
# NODE GEOMETRY (templates + encoders)
# ──────────────────────────────────────────────
NODE_QUBITS = 4
DATA_FEATURES = 16                      # 4x4 image -> 16 angles
DATA_AXES = ("ry", "rz", "rx", "ry")    # one rotation layer per axis
INTERMEDIATE_ANGLE_SCALE = math.pi      # theta = pi * <Z>
N_TEMPLATES = 6                         # id 0 is the empty template
TEMPLATE_PARAM_COUNTS = (0, 4, 8, 8, 16, 12)

# ──────────────────────────────────────────────
# BACKBONE
# ──────────────────────────────────────────────
BACKBONE_DEPTH = 3              # full binary tree -> 7 nodes
MAX_BACKBONE_DEPTH = 4

# ──────────────────────────────────────────────
# MODEL TRAINING
# ──────────────────────────────────────────────
TRAIN_EPOCHS = 20
TRAIN_BATCH_SIZE = 64
TRAIN_LR = 5e-3
TRAIN_WEIGHT_DECAY = 1e-4
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
EVAL_CAP = 300                  # accuracy uses the first 300 samples

# Fast mode (CI / smoke runs)
FAST_EPOCHS = 5
FAST_TRAIN_SAMPLES = 100

# ──────────────────────────────────────────────
# SECURITY ENGINE (controller + search)
# ──────────────────────────────────────────────
CONTROLLER_HIDDEN = 35
CONTROLLER_EMBED = 8
CONTROLLER_INIT_SCALE = 0.1     # U[-0.1, 0.1] for LSTM + embeddings
RMSPROP_DECAY = 0.9
RMSPROP_EPS = 1e-8
CONTROLLER_LR = 0.99            # 0.01-0.1 if training diverges
GRAD_CLIP_NORM = 5.0
BASELINE_DECAY = 0.95

SEARCH_EPISODES = 200
SAMPLES_PER_EPISODE = 1
SEARCH_LAMBDA = 0.5
SEARCH_WORKERS = 4              # parallel submodel evaluations

# ──────────────────────────────────────────────
# FLEET (simulated quantum cloud providers)
# ──────────────────────────────────────────────
FLEET_HOST = "127.0.0.1"
FLEET_BASE_PORT = 7001          # qcp1 -> 7001, qcp2 -> 7002, ...
NET_TIMEOUT = 5.0               # seconds per job roundtrip
NET_RECV_BYTES = 65536
DISPATCH_WORKERS = 8            # concurrent sibling-node jobs

# provider -> [(device, p1, p2, readout_flip)]
DEFAULT_NOISE_PROFILES = {
    "qcp1": [("b1", 0.001, 0.01, 0.02)],
    "qcp2": [("b2", 0.002, 0.02, 0.03)],
    "qcp3": [("b3", 0.0005, 0.008, 0.015)],
    "qcp4": [("b4", 0.003, 0.03, 0.04)],
}
FLEET_SIZES = {
    2: ("qcp1", "qcp3"),
    3: ("qcp1", "qcp2", "qcp3"),
    4: ("qcp1", "qcp2", "qcp3", "qcp4"),
}
DEFAULT_FLEET_SIZE = 3

# ──────────────────────────────────────────────
# REDTEAM
# ──────────────────────────────────────────────
FIDELITY_MAX_QUBITS = 6         # dense unitaries for the success metric
PROBE_MATCH_TOL = 1e-9          # angle tolerance when peeling a known probe
ATTACK_ACC_TOL = 0.03           # recovered vs measured submodel accuracy

# ──────────────────────────────────────────────
# DATA
# ──────────────────────────────────────────────
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IMAGE_SIDE = 28
DOWNSAMPLED_SIDE = 4
PIXEL_MAX = 255.0

# dataset name -> (source, original classes)
DATASETS = {
    "mnist2": ("mnist", (3, 6)),
    "mnist4": ("mnist", (0, 3, 6, 9)),
    "fashion2": ("fashion", (3, 6)),          # dress, shirt
    "fashion4": ("fashion", (0, 3, 6, 9)),    # t-shirt, dress, shirt, ankle boot
    "synth2": ("synth", (0, 1)),
    "synth4": ("synth", (0, 1, 2, 3)),
}
IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
SYNTH_TRAIN_SIZE = 400
SYNTH_TEST_SIZE = 300
SYNTH_SPREAD = 0.35             # blob std (radians)

# ──────────────────────────────────────────────
# CLI / OUTPUT
# ──────────────────────────────────────────────
DATA_DIR_ENVS = ("QUMOS_DATA_DIR", "SPLITQ_DATA_DIR")   # first set wins
EPISODES_CSV = "episodes.csv"
BEST_ACC_JSON = "best_acc.json"
BEST_SEC_JSON = "best_sec.json"
PARETO_JSON = "pareto.json"
PARETO_SVG = "pareto.svg"
ACC_SECACC_SVG = "acc_vs_secacc.svg"
SUMMARY_CSV = "summary.csv"
ATTACK_JSON = "attack.json"
MODEL_JSON = "model.json"
SECURITY_JSON = "security.json"
NAIVE5_TEMPLATE = 2             # one template on every node of the naive preset
LOG_FORMAT = "[%(name)s] %(message)s"
