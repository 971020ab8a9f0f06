"""Tournament evaluation engine for conversational dialogue systems.

Pipeline: sample bot-bot conversations from human seeds, segment them, collect
two-step crowd judgments (bot/unsure/human plus feature preferences), then
rank systems by pairwise win rates with bootstrap significance and analyze
spotting times with interval-censored survival models.
"""

__version__ = "0.1.0"

from .annotation import (AnnotationRecord, Choice, EntityLabel, Feature,
                         FeaturePreference, encode_feature, import_annotations,
                         validate_annotation)
from .batching import (AssignmentLedger, Batch, Plan, PlanConfig, SegmentItem,
                       assemble_batches, build_items, load_plan, save_plan,
                       validate_plan)
from .corpus import (Conversation, Corpus, EntityDescriptor, Exchange, Segment,
                     Turn, extract_seed, load_corpus, save_corpus, segment,
                     training_overlap_rate)
from .ranking import (RankingReport, SkillRating, WinTally, bootstrap_ranking,
                      chi_square, fit_trueskill, segment_winner, tally, win_rate)
from .survival import (CoxFit, SurvivalObservation, TurnbullEstimate, cox_fit,
                       encode_observations, feature_win_rate, logrank_test,
                       pairwise_tests_corrected, survival_at, turnbull_fit)
