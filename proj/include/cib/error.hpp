#pragma once

#include <stdexcept>
#include <string>

namespace cib {

enum class Errc {
  OutOfBounds,
  MisalignedAtomic,
  OutOfSpace,
  EmptyName,
  NameTooLong,
  CorruptRecord,
  KeyOutOfRange,
  BlockFull,
  SlotNotValid,
  NotFound,
  AlreadyExists,
  UnsplittableBlock,
  CorruptLayout,
  BadImage,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(errc_name(code)), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cib
