"""Value types shared by ingest, graph construction, the model and evaluation."""
