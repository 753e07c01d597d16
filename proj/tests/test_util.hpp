#pragma once

#include <gtest/gtest.h>

#include "ssmgan/error.hpp"

// Expects `stmt` to throw ssmgan::Error with the given code.
#define EXPECT_SSMGAN_ERROR(stmt, expected_code)                                                     \
  do {                                                                                               \
    try {                                                                                            \
      stmt;                                                                                          \
      ADD_FAILURE() << "expected " << ::ssmgan::to_string(expected_code) << ", nothing was thrown"; \
    } catch (const ::ssmgan::Error& e_) {                                                            \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                                              \
    }                                                                                                \
  } while (0)
