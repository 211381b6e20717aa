#ifndef MIG_ERRORS_HPP
#define MIG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mig {

/// Failure categories. Each maps onto one process exit code of the CLI.
enum class ErrorKind {
  input = 2,          // unparseable input or bad configuration
  data_contract = 3,  // data violates a structural contract (e.g. missing response)
  infeasible = 4,     // method cannot run on this data (too few complete rows, ...)
  numerical = 5,      // internal numerical failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

/// A standardized column with fewer than two distinct observed values.
class DegenerateColumn : public Error {
 public:
  DegenerateColumn(long column, const std::string& name)
      : Error(ErrorKind::data_contract, "degenerate column '" + name + "' (index " + std::to_string(column) +
                                            "): fewer than two distinct observed values"),
        column_(column) {}
  long column() const noexcept { return column_; }

 private:
  long column_;
};

/// Rank-deficient regression design. `column` is the 0-based slope index of the
/// first design column that lies in the span of the columns before it.
class SingularDesign : public Error {
 public:
  explicit SingularDesign(long column)
      : Error(ErrorKind::numerical, "singular design: column " + std::to_string(column) +
                                        " is linearly dependent on earlier columns"),
        column_(column) {}
  long column() const noexcept { return column_; }

 private:
  long column_;
};

/// A column with no observed values cannot be imputed.
class UnimputableColumn : public Error {
 public:
  explicit UnimputableColumn(long column)
      : Error(ErrorKind::data_contract, "column " + std::to_string(column) + " has no observed values"),
        column_(column) {}
  long column() const noexcept { return column_; }

 private:
  long column_;
};

}  // namespace mig

#endif  // MIG_ERRORS_HPP
