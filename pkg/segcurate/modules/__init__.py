# Algorithmic modules: segmentation, render, representation, selection, optimization, synth
