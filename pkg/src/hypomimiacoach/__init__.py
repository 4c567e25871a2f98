"""HypomimiaCoach: AU-based hypomimia detection and facial rehabilitation.

Desk-scale implementation of the detection pipeline (per-AU extractor heads,
kNN AU graph with normalized graph convolution, convolutional classifier,
SGD training) and the rehabilitation engine (neutral-baseline scoring,
three-level feedback, basic/advanced session machines, reports and a
telemedicine service).
"""

__version__ = "0.1.0"
