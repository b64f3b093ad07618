# Routers package for the mergesum HTTP service
