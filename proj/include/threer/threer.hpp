#pragma once

// Umbrella header for the 3R retrieval-refinement-ranking engine.

#include "threer/cache_store.hpp"
#include "threer/clients.hpp"
#include "threer/critique.hpp"
#include "threer/embedding.hpp"
#include "threer/errors.hpp"
#include "threer/hash.hpp"
#include "threer/mock_clients.hpp"
#include "threer/pipeline.hpp"
#include "threer/prompt_pipeline.hpp"
#include "threer/question_bank.hpp"
#include "threer/ranking.hpp"
#include "threer/relation_db.hpp"
#include "threer/retrieval.hpp"
#include "threer/run_record.hpp"
#include "threer/templates.hpp"

namespace threer {
inline constexpr char kVersion[] = "0.1.0";
}
