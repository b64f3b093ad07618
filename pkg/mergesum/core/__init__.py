# Configuration and errors for mergesum
