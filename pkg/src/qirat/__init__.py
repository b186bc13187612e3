"""CPU-parallel multilingual dense-retrieval engine.

Exact cosine search over a worker-partitioned corpus, quantized/graph
comparison indexes, tokenizer/embedding-matrix surgery, IR metrics, and a
contrastive training objective, fronted by a CLI and an HTTP service.
"""

__version__ = "0.1.0"
