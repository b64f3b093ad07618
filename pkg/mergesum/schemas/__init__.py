# Spec and schema models for mergesum
