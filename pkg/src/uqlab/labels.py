"""Clinical-grade to binary-target mapping.

Grades 0 (no) and 1 (mild) are non-referable; 2 (moderate), 3 (severe) and
4 (proliferative) are sight-threatening and map to the positive class.
"""

N_CLINICAL_LABELS = 5
REFERABLE_GRADES = frozenset({2, 3, 4})


def binarize_label(clinical: int) -> int:
    if isinstance(clinical, bool) or not isinstance(clinical, int):
        raise TypeError(f"clinical label must be an int, got {clinical!r}")
    if not 0 <= clinical < N_CLINICAL_LABELS:
        raise ValueError(f"clinical label {clinical} outside 0..4")
    return int(clinical in REFERABLE_GRADES)
