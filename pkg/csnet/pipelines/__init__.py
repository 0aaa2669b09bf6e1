from .result_pipeline import ResultPipeline as ResultPipeline
from .file_pipeline import FilePipeline as FilePipeline
from .db_pipeline import DatabasePipeline as DatabasePipeline
