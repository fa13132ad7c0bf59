int main() {
  const int c = 7;
  try {
    throw c;
  } catch (char) {
    assert(0);
  } catch (const volatile int &e) {
    assert(e == 7);
  }
  return 0;
}
// VERDICT: SUCCESSFUL
