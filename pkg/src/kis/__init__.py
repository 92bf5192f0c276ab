"""Interior point kernel SVM training with ANOVA kernels and fast summation."""
