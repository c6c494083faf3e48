"""Exact discrete belief networks for identifying ships from night-time porthole sightings."""

from .inference import (ContradictoryEvidence, EvidenceSet, LikelihoodFinding, bel_star,
                        joint_probability, log_bel_star, mpe_assignment, posterior_bel)
from .network import (BeliefNetwork, ConditionalTable, DiscreteVariable, NetworkError,
                      build_network, load_network, save_network)
from .obsnet import (ObservationModel, ObservationProblem, OutcomeSequence, StateSpaceTooLarge,
                     build_exhaustive_net, build_porthole_classifier, build_sd_net,
                     count_outcomes, enumerate_outcomes, sd_state_space, sighting_evidence)
from .shipdb import (DatabaseError, ShipDatabase, SimulationConfig, TargetRecord, load_db,
                     remove_target, save_db, simulate_observations, upsert_target)
from .taxonomy import (Classification, NetworkClassifier, TargetClassifier, TaxonomyNode,
                       Thresholds, classify_hierarchical, load_taxonomy, next_informative_feature)
from .toengine import (PortholeFeature, TOModule, build_to_module, evaluate_target,
                       rank_targets, reject_decision)

__version__ = "0.1.0"
