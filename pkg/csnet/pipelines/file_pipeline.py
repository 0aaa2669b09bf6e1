import logging
from pathlib import Path

from scrapy.exporters import CsvItemExporter, JsonItemExporter

from csnet.items import RESULT_FIELDS

logger = logging.getLogger(__name__)


class FilePipeline(object):
    """Writes rows to the run's CSV or JSON result file."""

    def open_run(self, experiment):
        self.path = Path(experiment.output_path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.file = open(self.path, "wb")
        if experiment.output_format == "json":
            self.exporter = JsonItemExporter(
                self.file,
                encoding="utf-8",
                ensure_ascii=False,
                fields_to_export=list(RESULT_FIELDS),
                export_empty_fields=True,
            )
        else:
            self.exporter = CsvItemExporter(
                self.file,
                include_headers_line=True,
                fields_to_export=list(RESULT_FIELDS),
            )
        self.exporter.start_exporting()

    def close_run(self, experiment, failed: bool = False):
        if not failed:
            self.exporter.finish_exporting()
        self.file.close()
        if failed and self.path.exists():
            logger.warning("removing partial result file %s", self.path)
            self.path.unlink()

    def process_item(self, item, experiment):
        self.exporter.export_item(item)
        return item
