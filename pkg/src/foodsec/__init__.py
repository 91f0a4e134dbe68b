"""Sector-level food-security and poverty proxy indicators from mobile
phone records (calls and airtime top-ups) validated against household
survey data."""

__version__ = "0.1.0"

from .ingest import (  # noqa: F401
    CallRecord,
    FormatError,
    RowErrorLog,
    StrictModeError,
    SurveyTable,
    TopUpRecord,
    TowerSectorMap,
    load_survey,
    load_tower_map,
    parse_cdr_stream,
    parse_topup_stream,
)
from .features import (  # noqa: F401
    FeatureConfig,
    UserFeatureVector,
    assign_home_tower,
    build_user_features,
    social_diversity,
    topup_features,
)
from .aggregate import SectorMatrix, aggregate_sector, build_sector_matrix  # noqa: F401
from .indices import (  # noqa: F401
    FoodGroupWeights,
    classify_fcs,
    coping_strategy_index,
    food_consumption_score,
    multidimensional_poverty_index,
    sector_survey_means,
)
from .correlate import (  # noqa: F401
    CorrelationEntry,
    NullSummary,
    correlation_matrix,
    fisher_ci,
    pearson,
    pearson_p,
    shuffle_null,
)
from .models import (  # noqa: F401
    RegressionModel,
    evaluate_model,
    fit_from_matrices,
    fit_model,
    predict,
)
from .rolling import SectorSeries, emit_overlay, rolling_sector_series  # noqa: F401
from .synth import SynthConfig, generate, verify_outputs  # noqa: F401
