#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "morseuq/proofread.hpp"

namespace morseuq {

// HTTP JSON front end for proofreading sessions.
//
//   GET  /api/cases                  [{id, dims}]
//   GET  /api/case/{id}              grids as base64 GRD1, structures, queue
//   POST /api/case/{id}/decision     {structure_id, accept} -> {dice, cldice, remaining}
//   GET  /api/case/{id}/trace        [{clicks, dice, cldice}]
//   POST /api/case/{id}/export       writes the corrected mask -> {path, session}
//
// Unknown case or structure: 404. Repeated or non-pending decision: 409.
// Malformed body: 400. Mutations on one case are serialized.
class ProofreadService {
 public:
  explicit ProofreadService(std::filesystem::path export_dir);
  ~ProofreadService();
  ProofreadService(const ProofreadService&) = delete;
  ProofreadService& operator=(const ProofreadService&) = delete;

  // Register before serving; ids must be unique.
  void add_case(ScalarGrid image, ScalarGrid likelihood, Session session);

  // Returns the bound port, or -1 on failure. port 0 picks a free one.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace morseuq
