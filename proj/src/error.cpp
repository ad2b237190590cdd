#include "topiceq/error.hpp"

namespace topiceq {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidEscape: return "InvalidEscape";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::EmptyVocab: return "EmptyVocab";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NumericsError: return "NumericsError";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::UnknownSymbol: return "UnknownSymbol";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::InputError: return "InputError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Error";
}

}  // namespace topiceq
