"""The six spatial relations and their fixed wire order."""

RELATIONS = ("inside", "left", "right", "in_front", "behind", "on_top")

REL_INDEX = {name: i for i, name in enumerate(RELATIONS)}

N_RELATIONS = len(RELATIONS)


def onehot(label: str):
    import numpy as np

    vec = np.zeros(N_RELATIONS, dtype=np.float32)
    vec[REL_INDEX[label]] = 1.0
    return vec
