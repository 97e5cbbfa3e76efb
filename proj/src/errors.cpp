#include "ddml/errors.hpp"

namespace ddml {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::unknown_feature: return "UnknownFeature";
    case Errc::unknown_level: return "UnknownLevel";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::empty_list: return "EmptyList";
    case Errc::pool_too_small: return "PoolTooSmall";
    case Errc::bad_magic: return "BadMagic";
    case Errc::truncated_file: return "TruncatedFile";
    case Errc::count_mismatch: return "CountMismatch";
    case Errc::delta_out_of_range: return "DeltaOutOfRange";
    case Errc::bind_failure: return "BindFailure";
    case Errc::bad_config: return "BadConfig";
    case Errc::protocol: return "Protocol";
    case Errc::io: return "Io";
  }
  return "Error";
}

}  // namespace ddml
