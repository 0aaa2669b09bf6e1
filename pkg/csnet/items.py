# -*- coding: utf-8 -*-

# The result row written by every experiment
#
# Column meanings are documented in schema.md. The field order below is the
# CSV column order; bump settings.SCHEMA_VERSION when it changes.

import scrapy

RESULT_FIELDS = (
    "schema_version",
    "subcommand",
    "row_kind",
    "label",
    "trial",
    "seed",
    "n",
    "k",
    "m",
    "rho",
    "alpha",
    "symbol_rate",
    "snr_db",
    "rate",
    "success",
    "success_rate",
    "min_cut_rate",
    "op_count",
    "value",
    "ci_low",
    "ci_high",
    "details",
    "timestamp",
)


class ResultRow(scrapy.Item):
    schema_version = scrapy.Field()
    subcommand = scrapy.Field()
    row_kind = scrapy.Field()
    label = scrapy.Field()
    trial = scrapy.Field()
    seed = scrapy.Field()

    n = scrapy.Field()
    k = scrapy.Field()
    m = scrapy.Field()
    rho = scrapy.Field()
    alpha = scrapy.Field()
    symbol_rate = scrapy.Field()
    snr_db = scrapy.Field()
    rate = scrapy.Field()

    success = scrapy.Field()
    success_rate = scrapy.Field()
    min_cut_rate = scrapy.Field()
    op_count = scrapy.Field()
    value = scrapy.Field()
    ci_low = scrapy.Field()
    ci_high = scrapy.Field()
    details = scrapy.Field()

    timestamp = scrapy.Field()
