"""Published numbers the ``reproduce`` command prints gaps against.

Keys of ``TABLE1`` are method names; each maps dataset -> (accuracy, auc_roc, macro_f1).
Per-class tables map method -> {"L<k>": f1}.
"""

METHODS = ("GCN+CE", "GCN+FL", "Reg+CE", "Reg+FL")

TABLE1 = {
    "GCN+CE": {"cora": (0.804, 0.959, 0.783), "citeseer": (0.673, 0.897, 0.609)},
    "GCN+FL": {"cora": (0.802, 0.971, 0.785), "citeseer": (0.648, 0.875, 0.608)},
    "GraphSMOTE": {"cora": (0.774, 0.953, 0.768), "citeseer": (0.31, 0.632, 0.283)},
    "Reg+CE": {"cora": (0.827, 0.975, 0.806), "citeseer": (0.683, 0.895, 0.640)},
    "Reg+FL": {"cora": (0.823, 0.976, 0.805), "citeseer": (0.668, 0.893, 0.615)},
}

# minority-class F1 on Cora
TABLE4 = {
    "GCN+CE": {"L1": 0.65, "L3": 0.78, "L5": 0.77, "L6": 0.71},
    "GCN+FL": {"L1": 0.85, "L3": 0.88, "L5": 0.74, "L6": 0.73},
    "GraphSMOTE": {"L1": 0.67, "L3": 0.88, "L5": 0.78, "L6": 0.64},
    "Reg+CE": {"L1": 0.85, "L3": 0.92, "L5": 0.74, "L6": 0.73},
    "Reg+FL": {"L1": 0.85, "L3": 0.93, "L5": 0.74, "L6": 0.73},
}

# minority-class F1 on Citeseer
TABLE5 = {
    "GCN+CE": {"L3": 0.24, "L4": 0.66},
    "GCN+FL": {"L3": 0.29, "L4": 0.73},
    "GraphSMOTE": {"L3": 0.17, "L4": 0.14},
    "Reg+CE": {"L3": 0.32, "L4": 0.71},
    "Reg+FL": {"L3": 0.26, "L4": 0.71},
}

# dataset sizes: nodes, citation lines, features, classes
TABLE2 = {"cora": (2708, 5429, 1433, 7), "citeseer": (3327, 4732, 3703, 6)}

TABLE_FOR = {"t1": None, "t4": "cora", "t5": "citeseer"}
